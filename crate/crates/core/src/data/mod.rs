//! Schema-driven CSV ingestion, one-hot encoding, stratified splitting and
//! a-priori group statistics.

mod dataset;
mod encode;
mod groups;
mod schema;
mod split;

pub use dataset::{load_csv, load_csv_reader, Dataset, Provenance, Row};
pub use encode::{encode, ColumnMap, EncodedColumn, EncodedMatrix, Encoder};
pub use groups::{
    ex_ante_sp, group_distribution, sensitive_correlations, target_distribution, FeatureCorrelation,
};
pub use schema::{FeatureKind, FeatureSchema, FeatureSpec, GroupSpec, Remap, SensitiveSpec, TargetSpec};
pub use split::{
    stratified_split, stratified_split_indices, stratified_split_with_fallback, test_size, SplitIndices,
    Stratify,
};
