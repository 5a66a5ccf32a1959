//! Bundled ontology documents.

/// The 1099-form graph: a `supplier` root over `company`, `contractor` and
/// `subscription`, with six entities.
pub const HR_1099: &str = include_str!("../fixtures/hr-1099.json");
