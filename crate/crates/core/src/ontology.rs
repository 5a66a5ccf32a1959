//! Knowledge graph that constrains the hypothesis space.
//!
//! The graph is a single-rooted tree of concepts with entities hanging off
//! concepts. Every entity belongs to exactly one concept. Extension sizes and
//! sibling weights are computed once at load time; the [`Ontology`] is
//! immutable afterwards and can be shared freely behind an `Arc`.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::OntologyError;

/// Concept record as it appears in the ontology document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConceptNode {
    pub id: String,
    pub label: String,
    pub parent: Option<String>,
}

/// Entity record as it appears in the ontology document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Entity {
    pub id: String,
    pub label: String,
    pub concept: String,
}

/// The on-disk JSON form of an ontology.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OntologyDocument {
    pub concepts: Vec<ConceptNode>,
    pub entities: Vec<Entity>,
}

/// Whether a node is a concept or an entity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeKind {
    Concept,
    Entity,
}

/// Dense index of a node inside an [`Ontology`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeIx(pub(crate) usize);

impl NodeIx {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
struct NodeData {
    id: String,
    label: String,
    kind: NodeKind,
    /// Parent concept for concepts, owning concept for entities.
    parent: Option<NodeIx>,
    depth: usize,
    extension: u64,
    sibling_weight: u64,
}

/// A validated, immutable knowledge graph.
#[derive(Debug, Clone)]
pub struct Ontology {
    document: OntologyDocument,
    nodes: Vec<NodeData>,
    by_id: HashMap<String, NodeIx>,
    root: NodeIx,
    /// Child concepts per concept, sorted by id.
    child_concepts: HashMap<NodeIx, Vec<NodeIx>>,
    /// Entities attached directly to a concept, sorted by id.
    attached: HashMap<NodeIx, Vec<NodeIx>>,
    /// All entity nodes sorted by id.
    entities: Vec<NodeIx>,
}

impl PartialEq for Ontology {
    fn eq(&self, other: &Self) -> bool {
        self.document == other.document
    }
}

impl Ontology {
    /// Parses and validates an ontology document.
    pub fn from_json(text: &str) -> Result<Self, OntologyError> {
        let doc: OntologyDocument =
            serde_json::from_str(text).map_err(|e| OntologyError::Parse(e.to_string()))?;
        Self::from_document(doc)
    }

    /// Reads, parses, and validates an ontology file.
    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self, OntologyError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| OntologyError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn from_document(doc: OntologyDocument) -> Result<Self, OntologyError> {
        if doc.entities.is_empty() {
            return Err(OntologyError::NoEntities);
        }

        let mut nodes = Vec::with_capacity(doc.concepts.len() + doc.entities.len());
        let mut by_id = HashMap::new();
        for c in &doc.concepts {
            if by_id.insert(c.id.clone(), NodeIx(nodes.len())).is_some() {
                return Err(OntologyError::DuplicateId(c.id.clone()));
            }
            nodes.push(NodeData {
                id: c.id.clone(),
                label: c.label.clone(),
                kind: NodeKind::Concept,
                parent: None,
                depth: 0,
                extension: 0,
                sibling_weight: 1,
            });
        }
        for e in &doc.entities {
            if by_id.insert(e.id.clone(), NodeIx(nodes.len())).is_some() {
                return Err(OntologyError::DuplicateId(e.id.clone()));
            }
            nodes.push(NodeData {
                id: e.id.clone(),
                label: e.label.clone(),
                kind: NodeKind::Entity,
                parent: None,
                depth: 0,
                extension: 1,
                sibling_weight: 1,
            });
        }

        let concept_ix = |id: &str, by_id: &HashMap<String, NodeIx>| -> Option<NodeIx> {
            by_id
                .get(id)
                .copied()
                .filter(|ix| ix.0 < doc.concepts.len())
        };

        let mut roots = Vec::new();
        for (i, c) in doc.concepts.iter().enumerate() {
            match &c.parent {
                None => roots.push(c.id.clone()),
                Some(p) => {
                    let pix = concept_ix(p, &by_id).ok_or_else(|| {
                        OntologyError::DanglingParent {
                            id: c.id.clone(),
                            parent: p.clone(),
                        }
                    })?;
                    nodes[i].parent = Some(pix);
                }
            }
        }
        for (j, e) in doc.entities.iter().enumerate() {
            let cix = concept_ix(&e.concept, &by_id).ok_or_else(|| {
                OntologyError::DanglingConcept {
                    id: e.id.clone(),
                    concept: e.concept.clone(),
                }
            })?;
            nodes[doc.concepts.len() + j].parent = Some(cix);
        }

        // Cycle detection: walk each concept up toward a root, bounded by the
        // concept count. A walk that revisits a node is a cycle.
        for i in 0..doc.concepts.len() {
            let mut seen = HashSet::new();
            let mut cur = NodeIx(i);
            while let Some(p) = nodes[cur.0].parent {
                if !seen.insert(cur) {
                    return Err(OntologyError::Cycle(nodes[cur.0].id.clone()));
                }
                cur = p;
            }
        }

        let root = match roots.as_slice() {
            [only] => by_id[only],
            [] => {
                // Every concept has a parent, so the cycle check above would
                // have fired unless there are no concepts at all.
                return Err(OntologyError::NoRoot);
            }
            _ => return Err(OntologyError::MultipleRoots(roots)),
        };

        let mut child_concepts: HashMap<NodeIx, Vec<NodeIx>> = HashMap::new();
        let mut attached: HashMap<NodeIx, Vec<NodeIx>> = HashMap::new();
        for (i, n) in nodes.iter().enumerate() {
            if let Some(p) = n.parent {
                match n.kind {
                    NodeKind::Concept => child_concepts.entry(p).or_default().push(NodeIx(i)),
                    NodeKind::Entity => attached.entry(p).or_default().push(NodeIx(i)),
                }
            }
        }
        for list in child_concepts.values_mut().chain(attached.values_mut()) {
            list.sort_by(|a, b| nodes[a.0].id.cmp(&nodes[b.0].id));
        }

        for i in 0..nodes.len() {
            let mut depth = 0;
            let mut cur = nodes[i].parent;
            while let Some(p) = cur {
                depth += 1;
                cur = nodes[p.0].parent;
            }
            nodes[i].depth = depth;
        }

        // Each entity adds one to its owning concept and every ancestor.
        for j in 0..doc.entities.len() {
            let mut cur = nodes[doc.concepts.len() + j].parent;
            while let Some(p) = cur {
                nodes[p.0].extension += 1;
                cur = nodes[p.0].parent;
            }
        }

        for n in nodes.iter_mut() {
            n.sibling_weight = match (n.kind, n.parent) {
                (_, None) => 1,
                (NodeKind::Concept, Some(p)) => child_concepts[&p].len() as u64,
                (NodeKind::Entity, Some(p)) => attached[&p].len() as u64,
            };
        }

        let mut entities: Vec<NodeIx> = (doc.concepts.len()..nodes.len()).map(NodeIx).collect();
        entities.sort_by(|a, b| nodes[a.0].id.cmp(&nodes[b.0].id));

        Ok(Ontology {
            document: doc,
            nodes,
            by_id,
            root,
            child_concepts,
            attached,
            entities,
        })
    }

    /// The document this ontology was loaded from.
    pub fn document(&self) -> &OntologyDocument {
        &self.document
    }

    pub fn root(&self) -> NodeIx {
        self.root
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn concept_count(&self) -> usize {
        self.document.concepts.len()
    }

    pub fn entity_count(&self) -> usize {
        self.entities.len()
    }

    /// Looks up a node by id.
    pub fn node(&self, id: &str) -> Result<NodeIx, OntologyError> {
        self.by_id
            .get(id)
            .copied()
            .ok_or_else(|| OntologyError::UnknownNode(id.to_string()))
    }

    /// Looks up an entity by id, rejecting concept ids.
    pub fn entity(&self, id: &str) -> Result<NodeIx, OntologyError> {
        match self.by_id.get(id) {
            Some(&ix) if self.nodes[ix.0].kind == NodeKind::Entity => Ok(ix),
            _ => Err(OntologyError::UnknownEntity(id.to_string())),
        }
    }

    pub fn id(&self, ix: NodeIx) -> &str {
        &self.nodes[ix.0].id
    }

    pub fn label(&self, ix: NodeIx) -> &str {
        &self.nodes[ix.0].label
    }

    pub fn kind(&self, ix: NodeIx) -> NodeKind {
        self.nodes[ix.0].kind
    }

    pub fn parent(&self, ix: NodeIx) -> Option<NodeIx> {
        self.nodes[ix.0].parent
    }

    /// Distance from the root; the root has depth 0.
    pub fn depth(&self, ix: NodeIx) -> usize {
        self.nodes[ix.0].depth
    }

    /// All node indices, concepts first, in document order.
    pub fn nodes(&self) -> impl Iterator<Item = NodeIx> + '_ {
        (0..self.nodes.len()).map(NodeIx)
    }

    /// Entity indices sorted by id.
    pub fn entities(&self) -> &[NodeIx] {
        &self.entities
    }

    /// Child concepts of a concept, sorted by id.
    pub fn child_concepts(&self, ix: NodeIx) -> &[NodeIx] {
        self.child_concepts.get(&ix).map_or(&[], Vec::as_slice)
    }

    /// Entities attached directly to a concept, sorted by id.
    pub fn attached_entities(&self, ix: NodeIx) -> &[NodeIx] {
        self.attached.get(&ix).map_or(&[], Vec::as_slice)
    }

    /// Number of entities falling under `ix`: 1 for an entity, the count of
    /// transitively attached entities for a concept (possibly 0).
    pub fn extension_of(&self, ix: NodeIx) -> u64 {
        self.nodes[ix.0].extension
    }

    /// One plus the number of siblings of `ix`.
    pub fn sibling_weight_of(&self, ix: NodeIx) -> u64 {
        self.nodes[ix.0].sibling_weight
    }

    /// Whether entity `entity` lies in the extension of `node`.
    pub fn covers_ix(&self, node: NodeIx, entity: NodeIx) -> bool {
        if node == entity {
            return true;
        }
        if self.nodes[node.0].kind == NodeKind::Entity {
            return false;
        }
        let mut cur = self.nodes[entity.0].parent;
        while let Some(p) = cur {
            if p == node {
                return true;
            }
            cur = self.nodes[p.0].parent;
        }
        false
    }

    /// Entities in the extension of `ix`, sorted by id.
    pub fn extension_entities(&self, ix: NodeIx) -> Vec<NodeIx> {
        self.entities
            .iter()
            .copied()
            .filter(|&e| self.covers_ix(ix, e))
            .collect()
    }

    /// Extension size of the node with the given id.
    pub fn extension_size(&self, id: &str) -> Result<u64, OntologyError> {
        Ok(self.extension_of(self.node(id)?))
    }

    /// Sibling count plus one for the node with the given id.
    pub fn sibling_weight(&self, id: &str) -> Result<u64, OntologyError> {
        Ok(self.sibling_weight_of(self.node(id)?))
    }

    /// Whether `entity` falls under `node`. Both ids must exist.
    pub fn covers(&self, node: &str, entity: &str) -> Result<bool, OntologyError> {
        let n = self.node(node)?;
        let e = self.node(entity)?;
        if self.kind(e) != NodeKind::Entity {
            return Err(OntologyError::UnknownEntity(entity.to_string()));
        }
        Ok(self.covers_ix(n, e))
    }

    /// Entity ids whose label equals `label` exactly.
    pub fn entities_with_label(&self, label: &str) -> Vec<NodeIx> {
        self.entities
            .iter()
            .copied()
            .filter(|&e| self.label(e) == label)
            .collect()
    }

    /// Groups entity indices by their top-level branch (child concept of the
    /// root), keyed by branch id. Entities attached directly to the root are
    /// returned separately.
    pub(crate) fn entities_by_branch(&self) -> (BTreeMap<String, Vec<NodeIx>>, Vec<NodeIx>) {
        let mut branches = BTreeMap::new();
        for &c in self.child_concepts(self.root) {
            branches.insert(self.id(c).to_string(), self.extension_entities(c));
        }
        let direct = self.attached_entities(self.root).to_vec();
        (branches, direct)
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeKind::Concept => f.write_str("concept"),
            NodeKind::Entity => f.write_str("entity"),
        }
    }
}
