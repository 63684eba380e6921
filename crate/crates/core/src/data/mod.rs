//! Time-series datasets, their party partitions and mini-batch sampling.

mod csv_io;
mod dataset;
mod error;
mod partition;
mod sine;

pub use csv_io::{load_csv, save_csv, CsvLayout};
pub use dataset::{DatasetMeta, TimeSeriesDataset};
pub use error::{DataError, Result};
pub use partition::{
    even_split, merge_views, one_per_party, partition, subsample_batch, validate_assignment, Assignment, MiniBatch,
    PartyView,
};
pub use sine::{gen_sine, gen_sine2, gen_sine6, SineParams, SIX_ATTRIBUTE_FREQUENCIES, TWO_ATTRIBUTE_FREQUENCIES};
