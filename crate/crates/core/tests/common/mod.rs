#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use proptest::prelude::*;
use rand::Rng;
use wordlearn::ontology::{ConceptNode, Entity, OntologyDocument};
use wordlearn::service::{router, AppState, DEFAULT_BODY_LIMIT};
use wordlearn::session::{LexiconStore, SessionContext};
use wordlearn::{ElicitationConfig, Ontology};

pub const HR_1099: &str = include_str!("../../fixtures/hr-1099.json");

pub fn hr() -> Arc<Ontology> {
    Arc::new(Ontology::from_json(HR_1099).unwrap())
}

/// Builds a document from parent indices. `concept_parents[i]` is the parent
/// of concept `i + 1` and must be `<= i`; concept 0 is the root.
pub fn document_from_shape(concept_parents: &[usize], entity_owners: &[usize]) -> OntologyDocument {
    let mut concepts = vec![ConceptNode {
        id: "k0".into(),
        label: "Concept 0".into(),
        parent: None,
    }];
    for (i, &p) in concept_parents.iter().enumerate() {
        concepts.push(ConceptNode {
            id: format!("k{}", i + 1),
            label: format!("Concept {}", i + 1),
            parent: Some(format!("k{p}")),
        });
    }
    let entities = entity_owners
        .iter()
        .enumerate()
        .map(|(j, &c)| Entity {
            id: format!("x{j}"),
            label: format!("Entity {j}"),
            concept: format!("k{c}"),
        })
        .collect();
    OntologyDocument { concepts, entities }
}

/// Random tree with at most `max_nodes` nodes (concepts plus entities).
pub fn random_document(rng: &mut impl Rng, max_nodes: usize) -> OntologyDocument {
    let total = rng.random_range(2..=max_nodes);
    let concepts = rng.random_range(1..total);
    let entities = total - concepts;
    let parents: Vec<usize> = (1..concepts).map(|i| rng.random_range(0..i)).collect();
    let owners: Vec<usize> = (0..entities).map(|_| rng.random_range(0..concepts)).collect();
    document_from_shape(&parents, &owners)
}

pub fn document_strategy(max_concepts: usize, max_entities: usize) -> impl Strategy<Value = OntologyDocument> {
    (1..=max_concepts, 1..=max_entities).prop_flat_map(|(c, e)| {
        let parents: Vec<BoxedStrategy<usize>> = (1..c).map(|i| (0..i).boxed()).collect();
        let owners = proptest::collection::vec(0..c, e);
        (parents, owners).prop_map(|(p, o)| document_from_shape(&p, &o))
    })
}

/// Independent exact posterior over every node hypothesis, computed straight
/// from the raw document. `None` when no hypothesis is consistent.
pub fn oracle_posterior(doc: &OntologyDocument, observations: &[&str]) -> Option<BTreeMap<String, BigRational>> {
    let parent: HashMap<&str, Option<&str>> = doc
        .concepts
        .iter()
        .map(|c| (c.id.as_str(), c.parent.as_deref()))
        .collect();
    let mut ext: HashMap<&str, BTreeSet<&str>> = doc.concepts.iter().map(|c| (c.id.as_str(), BTreeSet::new())).collect();
    for e in &doc.entities {
        let mut cur = Some(e.concept.as_str());
        while let Some(c) = cur {
            ext.get_mut(c).unwrap().insert(e.id.as_str());
            cur = parent[c];
        }
        ext.insert(e.id.as_str(), BTreeSet::from([e.id.as_str()]));
    }
    let mut weight: HashMap<&str, i64> = HashMap::new();
    for c in &doc.concepts {
        let w = match &c.parent {
            None => 1,
            Some(p) => doc.concepts.iter().filter(|d| d.parent.as_deref() == Some(p)).count(),
        };
        weight.insert(c.id.as_str(), w as i64);
    }
    for e in &doc.entities {
        let w = doc.entities.iter().filter(|d| d.concept == e.concept).count();
        weight.insert(e.id.as_str(), w as i64);
    }

    let mut joint = BTreeMap::new();
    for (id, members) in &ext {
        if members.is_empty() {
            continue;
        }
        let mut v = BigRational::from_integer(BigInt::from(weight[id]));
        for x in observations {
            if members.contains(x) {
                v /= BigRational::from_integer(BigInt::from(members.len()));
            } else {
                v = BigRational::zero();
            }
        }
        joint.insert(id.to_string(), v);
    }
    let total: BigRational = joint.values().cloned().sum();
    if total.is_zero() {
        return None;
    }
    Some(joint.into_iter().map(|(k, v)| (k, v / &total)).collect())
}

pub fn ratio(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

pub fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap()
}

pub fn context(ontology: Arc<Ontology>, lexicon: Option<&Path>) -> Arc<SessionContext> {
    let store = match lexicon {
        Some(p) => LexiconStore::open(p).unwrap(),
        None => LexiconStore::in_memory(),
    };
    Arc::new(SessionContext::new(ontology, ElicitationConfig::default(), Arc::new(store)))
}

pub struct Server {
    pub base: String,
    handle: tokio::task::JoinHandle<()>,
}

impl Server {
    /// Serves hr-1099 with session logs in `dir/logs` and the lexicon at
    /// `dir/lexicon.json`.
    pub async fn start(dir: &Path) -> Server {
        Self::start_with_limit(dir, DEFAULT_BODY_LIMIT).await
    }

    pub async fn start_with_limit(dir: &Path, body_limit: usize) -> Server {
        let ctx = context(hr(), Some(&dir.join("lexicon.json")));
        let app = Arc::new(AppState::new(ctx, dir.join("logs"), body_limit).unwrap());
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
        let base = format!("http://{}", listener.local_addr().unwrap());
        let handle = tokio::spawn(async move {
            axum::serve(listener, router(app, Some("http://localhost:5173")))
                .await
                .unwrap();
        });
        Server { base, handle }
    }

    pub fn url(&self, path: &str) -> String {
        format!("{}{}", self.base, path)
    }

    pub async fn stop(self) {
        self.handle.abort();
        let _ = self.handle.await;
    }
}
