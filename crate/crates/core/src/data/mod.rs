//! Tabular data handling: ingestion, scaling, row/column partitioning and
//! ID-keyed joins of embedding tables.

mod dataset;
mod embedding;
mod scaler;
mod split;

pub use dataset::{load_csv, Dataset, Task};
pub use embedding::{join_embeddings, EmbeddingTable, JoinMode, Joined};
pub use scaler::{fit_scaler, inverse_transform, transform, ScalerParams};
pub use split::{row_split, vertical_split, RowSplit, SplitFractions, VerticalSpec, VerticalSplit};
