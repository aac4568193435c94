//! Interchange data model: search spaces, pipelines, candidates and runs.

mod data;
mod pipeline;
mod run;
mod space;
mod value;

pub use data::{Column, ColumnData, Dataset, Frame};
pub use pipeline::{PipelineEdge, PipelineGraph, PipelineNode};
pub(crate) use pipeline::{layers, topo_order};
pub use run::{Candidate, EnsembleMember, EnsembleSpec, RunHistory, Task};
pub use space::{merge_search_spaces, Condition, Domain, Hyperparameter, SearchSpace, TemplateStep};
pub use value::{Config, HpValue};
