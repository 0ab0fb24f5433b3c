//! HAZOP-UML workbench core.
//!
//! The pipeline runs in the same order an analyst works: a restricted-UML
//! [`model::ProjectModel`] is parsed from `.hzm` files ([`dsl`]), guide-word
//! tables from a [`registry::GuideWordRegistry`] are crossed with its
//! elements to produce skeleton rows ([`engine`]), the analyst fills those
//! rows in an [`store::AnalysisStore`], and [`consistency`], [`metrics`] and
//! [`report`] read the result back out.

pub mod consistency;
pub mod diagnostic;
pub mod dsl;
pub mod engine;
pub mod ids;
pub mod metrics;
pub mod model;
pub mod project;
pub mod registry;
pub mod report;
pub mod store;

#[cfg(feature = "testkit")]
pub mod testkit;

pub use diagnostic::{Diagnostic, Level};
pub use model::ProjectModel;
pub use registry::GuideWordRegistry;
pub use store::AnalysisStore;
