//! Data-to-text generation with exemplar style imitation.
//!
//! Given a structured record and an exemplar sentence, the hybrid
//! attention-copy model in [`model`] describes the record while following
//! the exemplar's wording. [`training`] learns it from plain
//! record/description pairs, [`slotfill`] is the template baseline, and
//! [`metrics`] scores content fidelity and style embodiment.

pub mod corpus;
pub mod dataprep;
pub mod metrics;
pub mod model;
pub mod numeric;
pub mod retrieval;
pub mod seed;
pub mod slotfill;
pub mod training;
