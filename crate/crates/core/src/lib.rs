//! Curation of biomedical sample metadata: records, templates, ontologies,
//! model-driven correction, adherence scoring and reviewer statistics.

pub mod adherence;
pub mod llm;
pub mod ontology;
pub mod record;
pub mod sampler;
pub mod stats;
pub mod template;
